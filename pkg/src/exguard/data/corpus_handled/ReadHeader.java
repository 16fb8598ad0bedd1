import java.io.DataInputStream;
import java.io.InputStream;

public class ReadHeader {
    public static void main(String[] args) {
        InputStream stream = System.in;
        try {
            int header = new DataInputStream(stream).readInt();
        } catch (EOFException ex) {
            System.err.println("Stream ended early: " + ex.getMessage());
            ex.printStackTrace();
        }
        System.out.println("header word: " + header);
    }
}
