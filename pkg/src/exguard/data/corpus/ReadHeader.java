import java.io.DataInputStream;
import java.io.InputStream;

public class ReadHeader {
    public static void main(String[] args) {
        InputStream stream = System.in;
        int header = new DataInputStream(stream).readInt();
        System.out.println("header word: " + header);
    }
}
