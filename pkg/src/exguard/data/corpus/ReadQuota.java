import java.io.FileReader;

public class ReadQuota {
    public static void main(String[] args) {
        String path = args[0];
        FileReader reader = new FileReader(path);
        System.out.println("quota file opened: " + path);
    }
}
